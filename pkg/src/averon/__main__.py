import sys

from averon.cli import main

sys.exit(main())
