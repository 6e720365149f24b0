"""
Script to convert a JHU CSSE COVID-19 time-series CSV into the generic
values CSV + coordinates CSV pair used by matrix datasets.
"""

import argparse
import logging
import sys
from pathlib import Path

from TVGS.errors import ReconstructionError
from TVGS.ingest import DEFAULT_WINDOW, cumulative_to_new, parse_jhu, write_matrix_dataset


def main():
    parser = argparse.ArgumentParser(
        description='Convert a JHU COVID-19 time series to daily new cases per locality'
    )
    parser.add_argument(
        '--input',
        type=str,
        required=True,
        help='Path to time_series_covid19_confirmed_{global,US}.csv'
    )
    parser.add_argument(
        '--layout',
        choices=['global', 'usa'],
        default='global',
        help='Column layout of the input file (default: global)'
    )
    parser.add_argument(
        '--start',
        type=str,
        default=DEFAULT_WINDOW[0],
        help=f'First day, ISO format (default: {DEFAULT_WINDOW[0]})'
    )
    parser.add_argument(
        '--end',
        type=str,
        default=DEFAULT_WINDOW[1],
        help=f'Last day, ISO format (default: {DEFAULT_WINDOW[1]})'
    )
    parser.add_argument(
        '--keep-negative',
        action='store_true',
        help='Keep negative daily differences instead of clamping them to 0'
    )
    parser.add_argument(
        '--drop-zero-rows',
        action='store_true',
        help='Also exclude localities without any case inside the window'
    )
    parser.add_argument(
        '--output-dir',
        type=str,
        default='data',
        help='Directory for <name>_values.csv and <name>_coords.csv (default: data)'
    )
    parser.add_argument(
        '--name',
        type=str,
        help='Output file prefix (default: covid_<layout>)'
    )

    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    input_path = Path(args.input)
    if not input_path.exists():
        print(f"Error: file {input_path} not found!")
        return 1

    try:
        table = parse_jhu(
            input_path, layout=args.layout, start=args.start, end=args.end, drop_zero_rows=args.drop_zero_rows,
        )
        dataset = cumulative_to_new(table, clamp_negative=not args.keep_negative)
    except ReconstructionError as e:
        print(f"Error: {e}")
        return 1

    output_dir = Path(args.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    name = args.name or f"covid_{args.layout}"
    values_path = output_dir / f"{name}_values.csv"
    coords_path = output_dir / f"{name}_coords.csv"
    write_matrix_dataset(dataset, values_path, coords_path)

    provenance = dataset.provenance
    print(f"\n✓ {dataset.nodes.count} localities x {dataset.signal.n_steps} days")
    if provenance.dropped_rows:
        print(f"  Excluded {provenance.dropped_rows} rows without usable coordinates")
    if provenance.zero_rows:
        print(f"  Excluded {provenance.zero_rows} rows without cases inside the window")
    if provenance.clamped:
        print(f"  Clamped {provenance.clamped} negative daily differences to 0")
    print(f"✓ Values saved to: {values_path}")
    print(f"✓ Coordinates saved to: {coords_path}")
    print("\nTo use it, point a config at it:")
    print(f'  "dataset": {{"kind": "matrix", "path": "{values_path}", "coords_path": "{coords_path}"}}')
    return 0


if __name__ == "__main__":
    sys.exit(main())
