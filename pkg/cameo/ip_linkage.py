"""
Shared-IP linkage: modal IP per (account, course) and the transitive closure
of accounts and modal IPs across courses
"""
import logging
from collections import Counter
from typing import Dict, Hashable, Iterable, List, Mapping, Set

from .schema import CourseStore, FilterConfig, IpGroupPartition, ModalIpRecord

logger = logging.getLogger(__name__)


class UnionFind:
    """
    Disjoint sets with union by rank and path compression.

    >>> uf = UnionFind()
    >>> uf.union(1, 2)
    >>> uf.union(2, 3)
    >>> uf.find(3) == uf.find(1)
    True
    >>> uf.find(7)
    7
    """

    def __init__(self):
        self.parent: Dict[Hashable, Hashable] = {}
        self.rank: Counter = Counter()

    def find(self, x):
        parent = self.parent.setdefault(x, x)
        if parent == x:
            return x
        root = parent
        while self.parent[root] != root:
            root = self.parent[root]
        # compress the whole path
        while x != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        px = self.find(x)
        py = self.find(y)
        if px == py:
            return
        if self.rank[px] == self.rank[py]:
            self.parent[py] = px
            self.rank[px] += 1
        elif self.rank[px] > self.rank[py]:
            self.parent[py] = px
        else:
            self.parent[px] = py


def modal_ip(store: CourseStore, account: str) -> ModalIpRecord:
    """Most frequent IP of the account in this course; ties go to the earliest first use, then lexicographic."""
    counts: Counter = Counter()
    first_seen: Dict[str, int] = {}
    for event in store.account_events.get(account, ()):
        if not event.ip:
            continue
        counts[event.ip] += 1
        first_seen.setdefault(event.ip, event.time_us)
    if not counts:
        raise ValueError(f"no IP data for account {account!r} in course {store.course!r}")
    ip = min(counts, key=lambda candidate: (-counts[candidate], first_seen[candidate], candidate))
    return ModalIpRecord(account=account, course=store.course, ip=ip, observation_count=counts[ip])


def modal_ip_records(stores: Mapping[str, CourseStore]) -> List[ModalIpRecord]:
    records = []
    for course in sorted(stores):
        store = stores[course]
        for account in sorted(store.accounts):
            try:
                records.append(modal_ip(store, account))
            except ValueError:
                logger.debug("account %s has no IP data in course %s", account, course)
    return records


def build_ip_groups(records: Iterable[ModalIpRecord]) -> IpGroupPartition:
    """Connected components of the bipartite account / modal-IP graph"""
    uf = UnionFind()
    accounts: Set[str] = set()
    for record in records:
        accounts.add(record.account)
        uf.union(("account", record.account), ("ip", record.ip))

    members: Dict[Hashable, Set[str]] = {}
    for account in accounts:
        members.setdefault(uf.find(("account", account)), set()).add(account)

    group_of: Dict[str, str] = {}
    named: Dict[str, frozenset] = {}
    for component in members.values():
        group_id = min(component)
        named[group_id] = frozenset(component)
        for account in component:
            group_of[account] = group_id

    logger.info("built %d IP groups over %d accounts", len(named), len(accounts))
    return IpGroupPartition(
        group_of=dict(sorted(group_of.items())),
        members=dict(sorted(named.items())),
        group_account_count={g: len(m) for g, m in sorted(named.items())},
    )


def shares_ip_history(a: str, b: str, part: IpGroupPartition) -> bool:
    group_a = part.group_of.get(a)
    group_b = part.group_of.get(b)
    if group_a is None or group_b is None:
        missing = a if group_a is None else b
        logger.debug("account %s had no IP data; treating as unlinked", missing)
        return False
    return group_a == group_b


def group_within_limit(group_size: int, config: FilterConfig) -> bool:
    """Shared-router exclusion: `at_least` drops groups of max_group_accounts or more, `exceeds` only larger ones."""
    if config.group_size_rule == "exceeds":
        return group_size <= config.max_group_accounts
    return group_size < config.max_group_accounts
