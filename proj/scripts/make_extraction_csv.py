#!/usr/bin/env python3
"""Writes the synthetic monthly extraction history used by the shipped scenarios.

f(t) is a bell-shaped production curve with a seasonal modulation, scaled so
that its integral equals the fluid volume needed to draw the five pressure
regions down to their targets (beta * sum(V_u * |target|)).
"""
import argparse
import math

BETA = 5.7e-4            # 1/MPa
REGION_AREA = 9.0        # km^2, 4x4 cells of 0.75 km
TARGETS = [1.0, 1.5, 2.0, 2.5, 1.5]  # MPa drawdown
YEARS = 31
PEAK, WIDTH, SEASONAL = 8.0, 4.0, 0.25


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="output CSV path")
    args = parser.parse_args()

    months = YEARS * 12
    times = [k / 12.0 for k in range(months + 1)]
    shape = [math.exp(-(((t - PEAK) / WIDTH) ** 2)) * (1.0 + SEASONAL * math.sin(2.0 * math.pi * t))
             for t in times]
    total = BETA * REGION_AREA * sum(TARGETS)
    integral = sum(shape[:-1]) / 12.0  # piecewise constant over each month
    scale = total / integral
    with open(args.out, "w", newline="\n") as fh:
        fh.write("t_years,value\n")
        for t, s in zip(times, shape):
            fh.write(f"{t!r},{s * scale!r}\n")


if __name__ == "__main__":
    main()
