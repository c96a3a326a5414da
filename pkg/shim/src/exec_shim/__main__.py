import sys

from exec_shim.runner import main

sys.exit(main())
