"""``python -m mmsumm``."""

import sys

from mmsumm.cli import main

sys.exit(main())
