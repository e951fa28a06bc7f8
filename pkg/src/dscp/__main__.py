import sys

from dscp.cli import main

sys.exit(main())
