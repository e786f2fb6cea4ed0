import sys

from hyperbo.cli import main

sys.exit(main())
