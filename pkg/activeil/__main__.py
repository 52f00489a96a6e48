import sys

from activeil.main import main

sys.exit(main())
