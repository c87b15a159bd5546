from __future__ import annotations

from stgraphrl.cli import main

if __name__ == "__main__":
    main()
