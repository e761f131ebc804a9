import sys

from platoon_lab.cli import main

sys.exit(main())
