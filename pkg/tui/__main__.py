"""python3 -m tui [--corpus SPECS] [--paths N] [--web]"""

from dashboard import main

main()
