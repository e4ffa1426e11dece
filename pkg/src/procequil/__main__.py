"""Entry point for ``python -m procequil``."""

import sys

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

from .cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
