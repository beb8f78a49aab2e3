import sys

from coop_sampling.main import main

sys.exit(main())
