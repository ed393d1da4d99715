import sys

from qbmdarwin.cli import main

sys.exit(main())
