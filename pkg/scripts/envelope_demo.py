#!/usr/bin/env python3
"""Random Legendre splines against their Bernstein envelope bounds.

Emits one CSV row per spline: true extrema from dense sampling, the convex
envelope bounds, and the (always nonnegative) tightness gaps.  Data is shaped
for one-command external plotting; no plotting dependency here.
"""

import sys

from socenv.cli import main as cli_main


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    return cli_main(["envelope-demo"] + argv)


if __name__ == "__main__":
    sys.exit(main())
