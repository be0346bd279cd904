"""Registrable-domain lookup against a public-suffix rule snapshot.

The rule file format follows the public suffix list conventions: one rule per
line, ``//`` comments, ``*`` matching exactly one label, ``!`` marking
exception rules. Unlike the upstream algorithm there is no implicit ``*``
default rule: a host matching no rule at all is returned unchanged (this is
what keeps IP literals and unknown TLD hosts intact).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cache
from importlib import resources
from pathlib import Path

_SNAPSHOT_RESOURCE = "public_suffix_snapshot.dat"


@dataclass(frozen=True)
class SuffixRules:
    """Parsed suffix rules: plain, wildcard (``*.``), and exception (``!``)."""

    plain: frozenset[str]
    wildcard: frozenset[str]  # stored without the "*." prefix
    exception: frozenset[str]  # stored without the "!" prefix
    version: str = "unversioned"

    @classmethod
    def from_lines(cls, lines: list[str], version: str | None = None) -> "SuffixRules":
        plain: set[str] = set()
        wildcard: set[str] = set()
        exception: set[str] = set()
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("//"):
                if version is None and line.startswith("// version:"):
                    version = line.split(":", 1)[1].strip()
                continue
            rule = line.split()[0].lower()
            if rule.startswith("!"):
                exception.add(rule[1:])
            elif rule.startswith("*."):
                wildcard.add(rule[2:])
            else:
                plain.add(rule)
        return cls(
            frozenset(plain), frozenset(wildcard), frozenset(exception),
            version if version is not None else "unversioned",
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "SuffixRules":
        return cls.from_lines(Path(path).read_text(encoding="utf-8").splitlines())

    def public_suffix(self, host: str) -> str | None:
        """Longest (most labels) matching suffix of ``host``; None when no rule matches."""
        labels = host.lower().split(".")
        n = len(labels)
        best_count = 0
        best: str | None = None
        for start in range(n):
            candidate = ".".join(labels[start:])
            # Exception rules always prevail: the suffix is the rule minus its
            # first label, which makes the rule itself the registrable domain.
            if candidate in self.exception:
                return ".".join(labels[start + 1 :])
            count = n - start
            if candidate in self.plain and count > best_count:
                best_count, best = count, candidate
            # A "*.tail" rule makes "<any label>.tail" a public suffix.
            tail = ".".join(labels[start + 1 :])
            if count >= 2 and tail in self.wildcard and count > best_count:
                best_count, best = count, candidate
        return best

    def registrable_domain(self, host: str) -> str:
        """Public suffix plus one label; the host itself when no rule matches.

        Hosts that ARE a public suffix come back unchanged (there is no
        registrable label left to add).
        """
        host = host.lower().rstrip(".")
        if not host:
            raise ValueError("empty host")
        suffix = self.public_suffix(host)
        if suffix is None or suffix == host or not suffix:
            return host
        prefix = host[: len(host) - len(suffix) - 1]
        return prefix.split(".")[-1] + "." + suffix


@cache
def bundled() -> SuffixRules:
    """Rules from the snapshot shipped inside the package."""
    source = resources.files("wikirel.data").joinpath(_SNAPSHOT_RESOURCE)
    return SuffixRules.from_lines(source.read_text(encoding="utf-8").splitlines())
