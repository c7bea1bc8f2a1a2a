"""Schemas and hidden row identity."""

from __future__ import annotations

from dataclasses import dataclass

from .values import DEC, INT, STR, VALUE_TYPES

BASE_ORIGIN = "base"


@dataclass(frozen=True, order=True)
class RowId:
    """Hidden unique row identity: (origin, seq).

    Base rows carry origin 'base'; rows created by an INSERT carry the
    inserting branch's name, so concurrent branches can never collide.
    """

    origin: str
    seq: int

    def __str__(self) -> str:
        return f"{self.origin}:{self.seq}"

    @classmethod
    def parse(cls, text: str) -> "RowId":
        origin, _, seq = text.rpartition(":")
        if not origin or not seq.lstrip("-").isdigit():
            raise ValueError(f"malformed row id {text!r}")
        n = int(seq)
        if n < 0:
            raise ValueError(f"malformed row id {text!r}")
        return cls(origin, n)


class Schema:
    """Ordered attribute list with declared types (Int, Dec or Str)."""

    __slots__ = ("attrs", "types", "_index")

    def __init__(self, columns: list[tuple[str, str]] | tuple[tuple[str, str], ...]):
        if not columns:
            raise ValueError("schema needs at least one attribute")
        names = [name for name, _ in columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate attribute names")
        for name, typ in columns:
            if not name:
                raise ValueError("empty attribute name")
            if typ not in VALUE_TYPES:
                raise ValueError(f"unknown type {typ!r} for attribute {name!r}")
        self.attrs: tuple[str, ...] = tuple(names)
        self.types: tuple[str, ...] = tuple(typ for _, typ in columns)
        self._index = {name: i for i, name in enumerate(names)}

    def __len__(self) -> int:
        return len(self.attrs)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Schema)
            and self.attrs == other.attrs
            and self.types == other.types
        )

    def __hash__(self) -> int:
        return hash((self.attrs, self.types))

    def __repr__(self) -> str:
        cols = ", ".join(f"{a} {t}" for a, t in zip(self.attrs, self.types))
        return f"Schema({cols})"

    def index_of(self, attr: str) -> int:
        try:
            return self._index[attr]
        except KeyError:
            raise KeyError(f"unknown attribute {attr!r}") from None

    def has(self, attr: str) -> bool:
        return attr in self._index

    def type_of(self, attr: str) -> str:
        return self.types[self.index_of(attr)]

    def columns(self) -> list[tuple[str, str]]:
        return list(zip(self.attrs, self.types))

    def to_json(self) -> list[list[str]]:
        return [[a, t] for a, t in zip(self.attrs, self.types)]

    @classmethod
    def from_json(cls, data) -> "Schema":
        return cls([(a, t) for a, t in data])


__all__ = ["Schema", "RowId", "BASE_ORIGIN", "INT", "DEC", "STR"]
