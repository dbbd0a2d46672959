import sys

from shotwise.cli import main

sys.exit(main())
