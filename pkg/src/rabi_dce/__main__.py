import sys

from rabi_dce.cli import main

sys.exit(main())
