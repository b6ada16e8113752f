#!/usr/bin/env python
"""Persistent cache of Monte Carlo null tables."""
from __future__ import annotations

import os
import re
import threading
from typing import Any
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np
import sqlalchemy as sa
from sqlalchemy import log

from .core import DEFAULT_MEMORY_BUDGET
from .core import Direction
from .core import Method
from .core import MethodSpec
from .core import parse_method_spec
from .dtypes import NDArray
from .exceptions import DataError
from .nulldist import build_null_table
from .nulldist import NullTable

#: Environment variable naming the default cache directory
TABLE_DIR_ENV = 'PCOMBINE_TABLE_DIR'

#: SQLite file created inside the cache directory
CACHE_FILENAME = 'null_tables.sqlite'

TableKey = Tuple[str, int, int, int]

metadata = sa.MetaData()

null_tables = sa.Table(
    'null_tables', metadata,
    sa.Column('method', sa.String(255), primary_key=True),
    sa.Column('K', sa.Integer, primary_key=True),
    sa.Column('B', sa.Integer, primary_key=True),
    sa.Column('seed', sa.String(32), primary_key=True),
    sa.Column('direction', sa.String(32), nullable=False),
    sa.Column('stats', NDArray(NDArray.F64), nullable=False),
)


def resolve_table_dir(table_dir: Optional[str] = None) -> Optional[str]:
    """Cache directory from the argument, else ``$PCOMBINE_TABLE_DIR``, else None."""
    return table_dir or os.environ.get(TABLE_DIR_ENV) or None


def _key(method: Union[MethodSpec, Method, str], K: int, B: int, seed: int) -> TableKey:
    spec = parse_method_spec(method) if not isinstance(method, MethodSpec) else method
    return (spec.key, int(K), int(B), int(seed))


@log.class_logger
class NullTableCache(object):
    """
    Null tables keyed by ``(method key, K, B, seed)``.

    Tables are held in memory and, when a directory is configured, persisted
    to an SQLite database in that directory.

    Parameters
    ----------
    table_dir : str, optional
        Cache directory; defaults to ``$PCOMBINE_TABLE_DIR``. Without one the
        cache only lives in memory.
    threads : int, optional
        Worker threads used for table builds
    memory_budget : int, optional
        Largest ``B * K`` a build may materialize

    """

    logger: Any

    def __init__(
        self,
        table_dir: Optional[str] = None,
        threads: Optional[int] = None,
        memory_budget: int = DEFAULT_MEMORY_BUDGET,
    ) -> None:
        self.table_dir = resolve_table_dir(table_dir)
        self.threads = threads
        self.memory_budget = memory_budget
        self._tables: Dict[TableKey, NullTable] = {}
        self._lock = threading.RLock()
        self._engine: Optional[sa.engine.Engine] = None
        if self.table_dir:
            os.makedirs(self.table_dir, exist_ok=True)
            path = os.path.join(self.table_dir, CACHE_FILENAME)
            self._engine = sa.create_engine(f'sqlite:///{path}')
            metadata.create_all(self._engine)
            self.logger.debug('using table cache %s', path)

    @property
    def path(self) -> Optional[str]:
        if not self.table_dir:
            return None
        return os.path.join(self.table_dir, CACHE_FILENAME)

    def get(
        self,
        method: Union[MethodSpec, Method, str],
        K: int,
        B: int,
        seed: int,
    ) -> Optional[NullTable]:
        """Return the cached table or None."""
        key = _key(method, K, B, seed)
        with self._lock:
            table = self._tables.get(key)
            if table is not None:
                return table
            if self._engine is None:
                return None
            query = sa.select(null_tables).where(
                null_tables.c.method == key[0],
                null_tables.c.K == key[1],
                null_tables.c.B == key[2],
                null_tables.c.seed == str(key[3]),
            )
            with self._engine.connect() as conn:
                row = conn.execute(query).mappings().first()
            if row is None:
                return None
            table = NullTable(
                method=parse_method_spec(row['method']),
                K=row['K'], B=row['B'], seed=int(row['seed']),
                stats=row['stats'], direction=Direction(row['direction']),
            )
            self._tables[key] = table
            self.logger.debug('loaded %r from %s', table, self.path)
            return table

    def put(self, table: NullTable) -> None:
        """Store a table, replacing any table with the same key."""
        with self._lock:
            self._tables[table.key] = table
            if self._engine is None:
                return
            method, K, B, seed = table.key
            with self._engine.begin() as conn:
                conn.execute(
                    sa.delete(null_tables).where(
                        null_tables.c.method == method,
                        null_tables.c.K == K,
                        null_tables.c.B == B,
                        null_tables.c.seed == str(seed),
                    ),
                )
                conn.execute(
                    sa.insert(null_tables).values(
                        method=method, K=K, B=B, seed=str(seed),
                        direction=table.direction.value, stats=table.stats,
                    ),
                )
            self.logger.debug('stored %r in %s', table, self.path)

    def get_or_build(
        self,
        method: Union[MethodSpec, Method, str],
        K: int,
        B: int,
        seed: int,
        build: Optional[Callable[[], NullTable]] = None,
    ) -> NullTable:
        """
        Return the cached table, building and storing it on a miss.

        Parameters
        ----------
        method : MethodSpec
            Method of the table
        K, B, seed : int
            Remaining key fields
        build : callable, optional
            Zero-argument builder; defaults to :func:`build_null_table`

        """
        spec = parse_method_spec(method) if not isinstance(method, MethodSpec) else method
        table = self.get(spec, K, B, seed)
        if table is not None:
            self.logger.info('cache hit %s K=%d B=%d seed=%d', spec.key, K, B, seed)
            return table

        # Builds run outside the lock; they may need other tables from this cache
        self.logger.info('cache miss %s K=%d B=%d seed=%d', spec.key, K, B, seed)
        if build is None:
            table = build_null_table(
                spec, K, B=B, seed=seed, threads=self.threads,
                memory_budget=self.memory_budget,
            )
        else:
            table = build()
        if table.key != _key(spec, K, B, seed):
            raise DataError(f'builder returned {table!r} for key {spec.key}')

        with self._lock:
            existing = self._tables.get(table.key)
            if existing is not None:
                return existing
            self.put(table)
        return table

    def keys(self) -> List[TableKey]:
        """Keys of all tables in memory or on disk, sorted."""
        with self._lock:
            out = set(self._tables)
            if self._engine is not None:
                query = sa.select(
                    null_tables.c.method, null_tables.c.K,
                    null_tables.c.B, null_tables.c.seed,
                )
                with self._engine.connect() as conn:
                    for method, K, B, seed in conn.execute(query):
                        out.add((method, int(K), int(B), int(seed)))
        return sorted(out)

    def loaded(self) -> List[TableKey]:
        """Keys of the tables used by this process so far."""
        with self._lock:
            return sorted(self._tables)

    def __contains__(self, key: TableKey) -> bool:
        return tuple(key) in self.keys()

    def __len__(self) -> int:
        return len(self.keys())


_re_header = re.compile(
    r'^#\s*method=(?P<method>.+),K=(?P<K>\d+),B=(?P<B>\d+),'
    r'seed=(?P<seed>-?\d+),direction=(?P<direction>\w+)\s*$',
)


def export_csv(table: NullTable, path: str) -> None:
    """Write a table as a header comment followed by one statistic per line."""
    header = 'method=%s,K=%d,B=%d,seed=%d,direction=%s' % (
        table.method.key, table.K, table.B, table.seed, table.direction.value,
    )
    np.savetxt(path, table.stats, fmt='%.17g', header=header, comments='# ')


def import_csv(path: str) -> NullTable:
    """Read a table written by :func:`export_csv`."""
    with open(path, 'r', encoding='utf-8') as infile:
        first = infile.readline().strip()
    m = _re_header.match(first)
    if not m:
        raise DataError(f'{path}: missing or malformed null table header')
    try:
        stats = np.loadtxt(path, comments='#', dtype=np.float64, ndmin=1)
    except ValueError as exc:
        raise DataError(f'{path}: malformed null table values: {exc}') from exc
    return NullTable(
        method=parse_method_spec(m.group('method')),
        K=int(m.group('K')),
        B=int(m.group('B')),
        seed=int(m.group('seed')),
        stats=stats,
        direction=Direction(m.group('direction')),
    )
