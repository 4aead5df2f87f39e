import sys

from twbn_slim.main import main

sys.exit(main())
