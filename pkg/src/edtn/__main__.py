import sys

from edtn.cli import main

sys.exit(main())
