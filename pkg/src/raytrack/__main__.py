import sys

from raytrack.cli import main

sys.exit(main())
