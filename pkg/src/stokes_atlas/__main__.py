import sys

from .atlas import main

sys.exit(main())
