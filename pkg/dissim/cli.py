"""
dissim CLI
==========

dissim または python -m dissim で実行

Usage:
    dissim simulate --input spec.json --time 1 --epsilon 1e-4
    dissim gca --input problem.json --method all
    dissim resources --beta 10 --beta 100
    dissim verify --seed 0
    dissim -v verify                 # DEBUG ログ

Logs go to stderr; JSON artifacts go to --output or stdout.
"""
# Load environment variables from .env file first
from dotenv import load_dotenv
load_dotenv()

import logging
import sys

import click

from . import __version__
from .commands import gca, resources, simulate, verify


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='DEBUG ログを出力する')
@click.version_option(version=__version__, prog_name='dissim')
def main(verbose: bool):
    """dissim - 散逸リンドブラッド方程式のシミュレーションと GCA 推定"""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )


main.add_command(simulate)
main.add_command(gca)
main.add_command(resources)
main.add_command(verify)


if __name__ == '__main__':
    main()
