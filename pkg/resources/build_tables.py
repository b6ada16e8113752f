#!/usr/bin/env python
# type: ignore
from __future__ import annotations

import logging
import sys
from optparse import OptionParser

from pcombine.base import CombinerPool
from pcombine.cache import NullTableCache
from pcombine.core import DEFAULT_B
from pcombine.core import DEFAULT_TABLE_SEED


# Handle command-line options
usage = 'usage: %prog [options] table-dir method [method ...]'
parser = OptionParser(usage=usage, add_help_option=False)
parser.add_option(
    '-K', '--studies', default='2,5,10,20',
    help='comma-separated numbers of studies',
)
parser.add_option(
    '-B', '--size', type='int', default=DEFAULT_B,
    help='null replicates per table',
)
parser.add_option(
    '-s', '--seed', type='int', default=DEFAULT_TABLE_SEED,
    help='table seed',
)
parser.add_option(
    '-t', '--threads', type='int',
    help='worker threads',
)
parser.add_option(
    '--help',
    help='display usage information',
)

(options, args) = parser.parse_args()

if len(args) < 2 or options.help:
    parser.print_help()
    sys.exit(1)

logging.basicConfig(level=logging.INFO, format='%(asctime)s %(name)s %(message)s')

cache = NullTableCache(args[0], threads=options.threads)
pool = CombinerPool(
    B=options.size, seed=options.seed, cache=cache,
    threads=options.threads, calibrate='mc',
)

for method in args[1:]:
    for K in [int(x) for x in options.studies.split(',') if x.strip()]:
        table = pool.get(method, K).table
        print(f'{table.method.key} K={K} B={table.B} seed={table.seed}')

print(f'{len(cache.keys())} tables in {cache.path}')
