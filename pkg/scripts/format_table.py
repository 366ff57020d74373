"""Geometry of the four formats and of the greedy set-partition search.

    python scripts/format_table.py
"""

from setpart8d.formats import (
    REPORT_HEADER,
    FormatKind,
    build_format,
    find_convention,
    fit_overhead,
    format_report,
    search_partition,
)
from setpart8d.geom8d import distance_spectrum


def spectrum_str(c, n=3):
    spec = sorted(distance_spectrum(c).items())[:n]
    return "  ".join(f"d²={d:g}:{k:g}" for d, k in spec)


def main():
    convs = find_convention()
    print(f"{len(convs)} label conventions reproduce the overhead formulas; first: {convs[0].describe()}\n")
    print(REPORT_HEADER)
    kinds = [FormatKind.PDM_BPSK, FormatKind.PB_5B8D, FormatKind.PA_7B8D, FormatKind.PDM_QPSK]
    formats = {k: build_format(k) for k in kinds}
    for c in formats.values():
        print(format_report(c).row())
    print("\nneighbor spectra per point (first three shells)")
    for c in formats.values():
        print(f"  {c.name:<10} {spectrum_str(c)}")

    print("\ngreedy search, whole classes taken in PB, PA, PI order")
    print(REPORT_HEADER)
    for bits in range(4, 9):
        c, rep = search_partition(bits)
        print(rep.row(), "  ", spectrum_str(c))

    print("\noverhead bits recovered from the built constellations (algebraic normal form)")
    for k in (FormatKind.PB_5B8D, FormatKind.PA_7B8D):
        for pos, expr in fit_overhead(formats[k]).items():
            print(f"  {k.value} b{pos} = {expr}")


if __name__ == "__main__":
    main()
