#!/usr/bin/env python3

from setuptools import setup

setup(name='cpclustering',
      version='0.1.0',
      description='spectral clustering with affinities built from conformal prediction p-values',
      url='',
      packages=['cpclustering'],
      install_requires=[
          'numpy',
          'scipy',
          'scikit-learn',
          'PyYAML',
          'dacite'
      ],
      entry_points={
          'console_scripts': ['cpclustering=cpclustering.pipeline:run']
      },
      tests_require=['pytest'],
      zip_safe=False)
