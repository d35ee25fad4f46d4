"""Allow `python -m asteroid_gnc`."""
import sys

from .cli import main

sys.exit(main())
