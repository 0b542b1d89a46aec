#!/usr/bin/env python3

import argparse
import logging
import os

from cpclustering.data_manager import make_blobs_fixture, make_moons_fixture, save_csv

logger = logging.getLogger("Benchmark fixtures")


def main():
    parser = argparse.ArgumentParser(description="Write the synthetic benchmark datasets as csv files")
    parser.add_argument("-o", "--output-dir", metavar="output_dir", dest="output_dir", type=str, default="data",
                        help="directory where the csv files are written")
    parser.add_argument("-s", "--seed", dest="seed", type=int, default=0, help="generator seed")
    parser.add_argument("-l", "--log-file", metavar="log_file", dest="log_file", type=str, default=None,
                        help="path to the log file to generate. Default ./create_fixtures.log")
    parser.add_argument("-L", "--log-level", dest="log_level", choices=['DEBUG', 'INFO', 'WARNING', 'ERROR',
                                                                        'CRITICAL'], help="set the logging level")
    args = parser.parse_args()
    logging.basicConfig(filename=args.log_file, level=args.log_level,
                        format='%(asctime)s - %(name)s - %(levelname)s: %(message)s')
    os.makedirs(args.output_dir, exist_ok=True)
    fixtures = {
        "blobs": make_blobs_fixture(n_per_blob=50, seed=args.seed),
        "three_blobs": make_blobs_fixture(n_per_blob=40, centers=((0.0, 0.0), (6.0, 0.0), (3.0, 5.0)), spread=0.8,
                                          seed=args.seed),
        "moons": make_moons_fixture(n_points=200, noise=0.05, seed=args.seed)
    }
    for name, dataset in fixtures.items():
        file_path = os.path.join(args.output_dir, name + ".csv")
        save_csv(dataset, file_path)
        logger.info(f"wrote {dataset.n} points to {file_path}")


if __name__ == '__main__':
    main()
