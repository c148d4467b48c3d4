import sys

from discobond.cli import main

sys.exit(main())
