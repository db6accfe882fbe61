"""Allow ``python -m budgetrank`` to invoke the command-line interface."""

import sys

from budgetrank.cli import main

if __name__ == "__main__":
    sys.exit(main())
