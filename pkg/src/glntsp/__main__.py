import sys

from glntsp.cli import main

sys.exit(main())
