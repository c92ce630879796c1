"""
Predicates for the signature-based baseline.

A rule is a small tree of filters evaluated against one flow's raw feature
row (a ``name -> value`` mapping). Leaves compare a single field against a
constant; ``And``, ``Or`` and ``Not`` combine them. Rules are stored as JSON::

    {"id": "syn-rate", "field": "SYN_count", "op": ">=", "value": 20}
    {"id": "syn-reset", "all": [{"field": "SYN_count", "op": ">=", "value": 10},
                                {"field": "state", "op": "==", "value": "RST"}]}

``any`` combines children with OR and ``not`` negates one child.
"""

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence

from probewatch.errors import BadRuleError
from probewatch.utils import Source, read_source

Row = Mapping[str, Any]


def _absent(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class Filter(ABC):
    """Predicate over a feature row."""

    @abstractmethod
    def evaluate(self, row: Row) -> bool:
        """
        Evaluate the predicate on one row.

        Args:
            row (Row): Raw feature values of one flow.

        Returns:
            bool: Whether the row matches.
        """

    @abstractmethod
    def to_dict(self) -> Dict:
        """JSON form of the predicate."""


class Field:
    """
    Operand reading one named value from a row.

    Missing and NaN values read as None, which fails every comparison.
    """

    def __init__(self, name: str):
        self.name = name

    def evaluate(self, row: Row):
        value = row.get(self.name)
        return None if _absent(value) else value


class _Comparison(Filter):
    op: str = ""

    def __init__(self, operand: Field, value):
        self.operand = operand
        self.value = value

    def evaluate(self, row: Row) -> bool:
        actual = self.operand.evaluate(row)
        if actual is None:
            return False
        try:
            return bool(self._compare(actual, self.value))
        except TypeError:
            return False

    @abstractmethod
    def _compare(self, actual, expected) -> bool:
        """Applies the operator."""

    def to_dict(self) -> Dict:
        return {"field": self.operand.name, "op": self.op, "value": self.value}


class GE(_Comparison):
    op = ">="

    def _compare(self, actual, expected):
        return actual >= expected


class GT(_Comparison):
    op = ">"

    def _compare(self, actual, expected):
        return actual > expected


class Eq(_Comparison):
    op = "=="

    def _compare(self, actual, expected):
        return actual == expected


class In(_Comparison):
    """True when the field's value is one of a listed set."""

    op = "in"

    def _compare(self, actual, expected):
        return actual in expected


class And(Filter):
    def __init__(self, *args: Filter):
        self.args = args

    def evaluate(self, row: Row) -> bool:
        return all(arg.evaluate(row) for arg in self.args)

    def to_dict(self) -> Dict:
        return {"all": [arg.to_dict() for arg in self.args]}


class Or(Filter):
    def __init__(self, *args: Filter):
        self.args = args

    def evaluate(self, row: Row) -> bool:
        return any(arg.evaluate(row) for arg in self.args)

    def to_dict(self) -> Dict:
        return {"any": [arg.to_dict() for arg in self.args]}


class Not(Filter):
    def __init__(self, arg: Filter):
        self.arg = arg

    def evaluate(self, row: Row) -> bool:
        return not self.arg.evaluate(row)

    def to_dict(self) -> Dict:
        return {"not": self.arg.to_dict()}


OPERATORS = {cls.op: cls for cls in (GE, GT, Eq, In)}


@dataclass
class MisuseRule:
    """
    A named signature.

    Attributes:
        id (str): Rule identifier used in hit counts.
        predicate (Filter): The match condition.
    """

    id: str
    predicate: Filter

    def matches(self, row: Row) -> bool:
        return self.predicate.evaluate(row)

    def to_dict(self) -> Dict:
        return {"id": self.id, **self.predicate.to_dict()}


def parse_predicate(d) -> Filter:
    """
    Builds a filter tree from its JSON form.

    Raises:
        BadRuleError: If the document is not a valid predicate.
    """
    if not isinstance(d, dict):
        raise BadRuleError(f"predicate must be an object, got {d!r}")
    if "all" in d or "any" in d:
        combinator = "all" if "all" in d else "any"
        children = d[combinator]
        if not isinstance(children, list) or not children:
            raise BadRuleError(f"'{combinator}' needs a non-empty list")
        parsed = [parse_predicate(c) for c in children]
        return And(*parsed) if combinator == "all" else Or(*parsed)
    if "not" in d:
        return Not(parse_predicate(d["not"]))
    for key in ("field", "op", "value"):
        if key not in d:
            raise BadRuleError(f"predicate {d!r} lacks '{key}'")
    if not isinstance(d["field"], str) or not d["field"]:
        raise BadRuleError(f"field must be a non-empty string, got {d['field']!r}")
    op = OPERATORS.get(d["op"])
    if op is None:
        raise BadRuleError(
            f"unknown operator {d['op']!r}; expected one of {sorted(OPERATORS)}"
        )
    value = d["value"]
    if op is In:
        if not isinstance(value, list):
            raise BadRuleError("'in' needs a list value")
        value = tuple(value)
    elif op in (GE, GT) and not _is_number(value):
        raise BadRuleError(f"'{d['op']}' needs a numeric value, got {value!r}")
    return op(Field(d["field"]), value)


def parse_rules(doc) -> List[MisuseRule]:
    """
    Parses a JSON array of rules.

    Args:
        doc: Decoded JSON; a list of rule objects each carrying an ``id``.

    Returns:
        List[MisuseRule]: The rules in document order.

    Raises:
        BadRuleError: On malformed rules or duplicate ids.
    """
    if not isinstance(doc, list):
        raise BadRuleError("a ruleset must be a JSON array")
    rules: List[MisuseRule] = []
    seen = set()
    for i, item in enumerate(doc):
        if not isinstance(item, dict):
            raise BadRuleError(f"rule {i} is not an object")
        rule_id = str(item.get("id", f"rule-{i}"))
        if rule_id in seen:
            raise BadRuleError(f"duplicate rule id {rule_id!r}")
        seen.add(rule_id)
        body = {k: v for k, v in item.items() if k != "id"}
        rules.append(MisuseRule(rule_id, parse_predicate(body)))
    return rules


def load_rules(source: Source) -> List[MisuseRule]:
    """Reads and parses a JSON ruleset from a path, URL or bytes."""
    try:
        doc = json.loads(read_source(source).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise BadRuleError(f"ruleset is not valid JSON: {e}") from e
    return parse_rules(doc)


def default_rules() -> List[MisuseRule]:
    """The bundled SYN-rate, SYN-reset and ICMP-sweep signatures."""
    path = Path(__file__).resolve().parent.parent / "data" / "default_rules.json"
    text = path.read_text("utf-8")
    return parse_rules(json.loads(text))


def rules_to_json(rules: Sequence[MisuseRule]) -> List[Dict]:
    return [rule.to_dict() for rule in rules]
