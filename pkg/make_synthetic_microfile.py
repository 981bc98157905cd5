"""
Synthetic Microfile Generator - writes a PUMS-like person-record CSV

Every parameter bucket receives exactly the requested number of active-duty
military records (MIL=1, employed) plus non-vital filler records, so the
quantity signal of the generated file is known in advance. Record order is
shuffled with a seeded generator; the same arguments always give the same file.

Columns: SERIALNO, SEX, AGEP, MIL, ESR, POWPUMA
"""
import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd

sys.path.insert(0, str(Path(__file__).resolve().parent / "src"))

from utils.microdata_store import Microfile, save_csv  # noqa: E402

MILITARY_QUANTITY = (669, 794, 9, 11, 852, 9, 4, 280, 31, 118, 6, 13, 1, 24, 7, 14, 18, 135)
PUMA_CODES = tuple(str(code) for code in range(12010, 12181, 10))
COLUMNS = ("SERIALNO", "SEX", "AGEP", "MIL", "ESR", "POWPUMA")


def make_synthetic_records(quantity=MILITARY_QUANTITY, labels=PUMA_CODES, filler=250, employed_share=0.7, seed=2010):
    """
    Build the records table.

    Args:
        quantity: vital (MIL=1) record count per bucket
        labels: POWPUMA code per bucket
        filler: non-vital records per bucket (int or per-bucket sequence)
        employed_share: probability that a filler record is employed (ESR=1)
        seed: generator seed

    Returns:
        DataFrame of strings with COLUMNS
    """
    if len(quantity) != len(labels):
        raise ValueError(f"{len(quantity)} counts for {len(labels)} labels")
    filler = [int(filler)] * len(labels) if np.isscalar(filler) else [int(n) for n in filler]
    rng = np.random.default_rng(seed)

    rows = []
    for label, vital_count, filler_count in zip(labels, quantity, filler):
        for _ in range(int(vital_count)):
            rows.append((str(rng.integers(1, 3)), str(rng.integers(18, 60)), "1", "1", label))
        for _ in range(filler_count):
            employed = rng.random() < employed_share
            rows.append((
                str(rng.integers(1, 3)),
                str(rng.integers(16, 90)),
                str(rng.integers(2, 5)),
                "1" if employed else "6",
                label,
            ))

    order = rng.permutation(len(rows))
    records = pd.DataFrame([rows[i] for i in order], columns=list(COLUMNS[1:]), dtype=object)
    records.insert(0, "SERIALNO", [f"{i + 1:07d}" for i in range(len(records))])
    return records.astype(object)


def make_synthetic_microfile(path, **kwargs):
    records = make_synthetic_records(**kwargs)
    microfile = Microfile(COLUMNS, records, source_path=str(path))
    save_csv(microfile, path)
    return microfile


@click.command()
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--filler", default=250, show_default=True, help="Non-vital records per bucket.")
@click.option("--seed", default=2010, show_default=True, help="Generator seed.")
def main(path, filler, seed):
    """Write a synthetic microfile with the military quantity signal to PATH."""
    microfile = make_synthetic_microfile(path, filler=filler, seed=seed)
    click.echo(f"Wrote {microfile.record_count} records to {path}")


if __name__ == "__main__":
    main()
