import sys

from nvsim.cli import main

sys.exit(main())
