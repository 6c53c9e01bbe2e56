import sys

from triepack.cli import main

sys.exit(main())
