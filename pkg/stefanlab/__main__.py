import sys

from stefanlab.cli import main

sys.exit(main())
