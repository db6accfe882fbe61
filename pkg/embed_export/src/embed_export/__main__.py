"""Allow ``python -m embed_export`` to invoke the command-line interface."""

import sys

from embed_export.cli import main

if __name__ == "__main__":
    sys.exit(main())
