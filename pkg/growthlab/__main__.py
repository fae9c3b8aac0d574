import sys

from growthlab.cli import main

sys.exit(main())
