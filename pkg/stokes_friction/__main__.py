import sys

from stokes_friction.cli import main

sys.exit(main())
