import sys

from polyloss.cli import main

sys.exit(main())
