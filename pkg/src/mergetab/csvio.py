"""RFC-4180 CSV for snapshots.

The stock csv module cannot distinguish an empty field (our Null) from a
quoted empty string (a Str value of length zero), so reading is done by a
small scanner that keeps the quoting flag per field.

Layout: header `_rid`, then attribute names; internal store files append a
`_dead` marker column and keep tombstoned rows, while exports omit both.
RowIds serialize as `origin:seq`; Dec values as exact decimals or
`num/den` when the expansion does not terminate.
"""

from __future__ import annotations

from typing import TextIO

from .schema import RowId, Schema
from .table import Row, TableSnapshot
from .values import STR, Value, format_value, parse_value

RID_COL = "_rid"
DEAD_COL = "_dead"


class CsvFormatError(ValueError):
    def __init__(self, msg: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {msg}")


def _quote(field: str) -> str:
    if field == "" or any(ch in field for ch in (",", '"', "\r", "\n")):
        return '"' + field.replace('"', '""') + '"'
    return field


def _field(v: Value) -> str:
    if v is None:
        return ""
    text = format_value(v)
    if isinstance(v, str):
        return _quote(text)
    return text


def _scan_records(text: str):
    """Yield (line_no, [(field, was_quoted), ...]) per record."""
    fields: list[tuple[str, bool]] = []
    buf: list[str] = []
    quoted = False
    in_quotes = False
    line_no = 1
    start_line = 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if in_quotes:
            if ch == '"':
                if i + 1 < n and text[i + 1] == '"':
                    buf.append('"')
                    i += 2
                    continue
                in_quotes = False
                i += 1
                continue
            if ch == "\n":
                line_no += 1
            buf.append(ch)
            i += 1
            continue
        if ch == '"':
            if buf:
                raise CsvFormatError("quote inside unquoted field", line_no)
            in_quotes = True
            quoted = True
            i += 1
            continue
        if ch == ",":
            fields.append(("".join(buf), quoted))
            buf = []
            quoted = False
            i += 1
            continue
        if ch in ("\n", "\r"):
            if ch == "\r" and i + 1 < n and text[i + 1] == "\n":
                i += 1
            fields.append(("".join(buf), quoted))
            yield start_line, fields
            fields = []
            buf = []
            quoted = False
            i += 1
            line_no += 1
            start_line = line_no
            continue
        buf.append(ch)
        i += 1
    if in_quotes:
        raise CsvFormatError("unterminated quoted field", start_line)
    if buf or quoted or fields:
        fields.append(("".join(buf), quoted))
        yield start_line, fields


def write_snapshot(v: TableSnapshot, out: TextIO, internal: bool = False) -> None:
    """Serialize a snapshot; internal=True keeps tombstones via _dead."""
    header = [RID_COL] + list(v.schema.attrs)
    if internal:
        header.append(DEAD_COL)
    out.write(",".join(header) + "\r\n")
    for i, rid in enumerate(v.rids):
        dead = bool(v.dead.vals[i])
        if dead and not internal:
            continue
        cells = [str(rid)] + [_field(col.vals[i]) for col in v._cols]
        if internal:
            cells.append("1" if dead else "")
        out.write(",".join(cells) + "\r\n")


def read_snapshot(text: str, schema: Schema) -> TableSnapshot:
    """Parse a snapshot against a known schema (store files, exports)."""
    records = _scan_records(text)
    try:
        line_no, header = next(records)
    except StopIteration:
        raise CsvFormatError("missing header", 1) from None
    names = [f for f, _ in header]
    internal = names and names[-1] == DEAD_COL
    expect = [RID_COL] + list(schema.attrs) + ([DEAD_COL] if internal else [])
    if names != expect:
        raise CsvFormatError(f"header {names!r} does not match schema", line_no)
    rows = []
    for line_no, fields in records:
        if len(fields) != len(expect):
            raise CsvFormatError(
                f"expected {len(expect)} fields, found {len(fields)}", line_no
            )
        try:
            rid = RowId.parse(fields[0][0])
            dead = internal and fields[-1][0] == "1"
            vals = []
            for (text_val, quoted), typ in zip(fields[1 : len(schema.attrs) + 1], schema.types):
                if text_val == "" and not quoted:
                    vals.append(None)
                elif typ == STR:
                    vals.append(text_val)
                else:
                    vals.append(parse_value(text_val, typ))
            rows.append(Row(rid, schema, tuple(vals), dead))
        except (ValueError, ArithmeticError) as exc:
            raise CsvFormatError(str(exc), line_no) from None
    return TableSnapshot.from_rows(schema, rows)


def infer_schema(text: str) -> Schema:
    """Column types from a plain data CSV.

    Numeric-looking columns infer as Dec (exact rationals subsume any
    integers present and survive later decimal writes); everything else is
    Str. Declare Int columns explicitly when int64 kernel scans matter.
    Empty fields are Null and compatible with anything; an all-empty
    column defaults to Str.
    """
    records = _scan_records(text)
    try:
        _, header = next(records)
    except StopIteration:
        raise CsvFormatError("missing header", 1) from None
    names = [f for f, _ in header]
    start = 1 if names and names[0] == RID_COL else 0
    attr_names = [n for n in names[start:] if n != DEAD_COL]
    if not attr_names:
        raise CsvFormatError("no attribute columns", 1)
    kinds = ["dec"] * len(attr_names)
    seen_value = [False] * len(attr_names)
    for line_no, fields in records:
        data = [f for f, _ in fields[start : start + len(attr_names)]]
        for k, text_val in enumerate(data):
            if text_val == "":
                continue
            seen_value[k] = True
            if kinds[k] == "dec":
                try:
                    parse_value(text_val, "dec")
                except (ValueError, ArithmeticError):
                    kinds[k] = "str"
    kinds = [k if saw else "str" for k, saw in zip(kinds, seen_value)]
    return Schema(list(zip(attr_names, kinds)))


def read_plain_csv(text: str, schema: Schema | None = None) -> TableSnapshot:
    """Parse a user-facing CSV (no _rid/_dead); base row ids are assigned."""
    if schema is None:
        schema = infer_schema(text)
    records = _scan_records(text)
    _, header = next(records)
    names = [f for f, _ in header]
    has_rid = names and names[0] == RID_COL
    attr_names = names[1:] if has_rid else names
    if attr_names != list(schema.attrs):
        raise CsvFormatError(f"header {attr_names!r} does not match schema", 1)
    rows = []
    seq = 0
    for line_no, fields in records:
        expect = len(schema.attrs) + (1 if has_rid else 0)
        if len(fields) != expect:
            raise CsvFormatError(
                f"expected {expect} fields, found {len(fields)}", line_no
            )
        try:
            if has_rid:
                rid = RowId.parse(fields[0][0])
                data = fields[1:]
            else:
                rid = RowId("base", seq)
                seq += 1
                data = fields
            vals = []
            for (text_val, quoted), typ in zip(data, schema.types):
                if text_val == "" and not quoted:
                    vals.append(None)
                elif typ == STR:
                    vals.append(text_val)
                else:
                    vals.append(parse_value(text_val, typ))
            rows.append(Row(rid, schema, tuple(vals), False))
        except (ValueError, ArithmeticError) as exc:
            raise CsvFormatError(str(exc), line_no) from None
    return TableSnapshot.from_rows(schema, rows)
