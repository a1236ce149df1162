"""Allow running the CLI as `python -m celleq`."""

import sys

from celleq.cli import main

if __name__ == "__main__":
    sys.exit(main())
