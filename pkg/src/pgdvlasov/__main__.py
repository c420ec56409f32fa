import sys

from pgdvlasov.cli import main

sys.exit(main())
