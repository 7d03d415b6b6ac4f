"""
python -m dissim で実行可能にする
"""
from dissim.cli import main

if __name__ == '__main__':
    main()
