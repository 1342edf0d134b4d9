"""
Export of MilpModels for external solvers, and a lossless JSON dump.

MPS output uses the fixed column layout (fields starting at columns 2, 5,
15, 25, 40 and 50). Names that do not fit an 8-character field, contain
whitespace or repeat are replaced by ``C0000001``-style column names and
``R0000001``-style row names; ``mps_name_map`` gives the translation.
"""

import json
from typing import Dict, List, Union

from .milp_model import MilpModel
from .reformulator import LinearConstraint, LinearExpr

MPS_FIXED = "mps-fixed"
NATIVE_JSON = "native-json"
EXPORT_FORMATS = (MPS_FIXED, NATIVE_JSON)

NATIVE_FORMAT = "polybound-milp"
NATIVE_VERSION = 1

NAME_WIDTH = 8
NUMBER_WIDTH = 12
OBJECTIVE_ROW = "OBJ"


# ----------------------------------------
# NAMES AND NUMBERS
# ----------------------------------------


def _fits(name: str) -> bool:
    return 0 < len(name) <= NAME_WIDTH and not any(ch.isspace() for ch in name)


def _assign_names(names: List[str], prefix: str, taken: set) -> List[str]:
    out = []
    counter = 0
    for name in names:
        if _fits(name) and name not in taken:
            chosen = name
        else:
            while True:
                counter += 1
                chosen = f"{prefix}{counter:07d}"
                if chosen not in taken and chosen not in names:
                    break
        taken.add(chosen)
        out.append(chosen)
    return out


def mps_name_map(model: MilpModel) -> Dict[str, List]:
    """
    Names used in the MPS file.

    Returns:
        {"columns": [[model id, mps name], ...],
         "rows": [[constraint name, mps name], ...]} in model order
    """
    columns = model.variable_ids
    rows = [con.name for con in model.constraints]
    col_names = _assign_names(columns, "C", set())
    row_names = _assign_names(rows, "R", {OBJECTIVE_ROW})
    return {
        "columns": [list(pair) for pair in zip(columns, col_names)],
        "rows": [list(pair) for pair in zip(rows, row_names)],
    }


def format_mps_number(value: float) -> str:
    """Shortest rendering of value within the 12-character number field."""
    text = repr(float(value))
    if text.endswith(".0"):
        text = text[:-2]
    if len(text) <= NUMBER_WIDTH:
        return text
    for digits in range(NUMBER_WIDTH, 0, -1):
        text = f"{value:.{digits}g}"
        if len(text) <= NUMBER_WIDTH:
            return text
    raise ValueError(f"cannot fit {value} into an MPS number field")


def _line(f1="", f2="", f3="", f4="", f5="", f6="") -> str:
    line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}   {f5:<8}  {f6}"
    return line.rstrip()


# ----------------------------------------
# MPS
# ----------------------------------------


def _mps_lines(model: MilpModel) -> List[str]:
    names = mps_name_map(model)
    col = dict((orig, mps) for orig, mps in names["columns"])
    row_names = [mps for _, mps in names["rows"]]

    entries: Dict[str, List] = {v: [] for v in model.variable_ids}
    for var, coef in model.objective.terms.items():
        entries[var].append((OBJECTIVE_ROW, coef))
    for row, con in zip(row_names, model.constraints):
        for var, coef in con.expr.terms.items():
            entries[var].append((row, coef))

    lines = [f"NAME          {model.name[:NAME_WIDTH] or 'MILP'}", "ROWS", f" N  {OBJECTIVE_ROW}"]
    lines += [f" L  {row}" for row in row_names]

    lines.append("COLUMNS")
    binaries = set(model.binaries)

    def column_lines(var):
        # a column must appear in COLUMNS before BOUNDS may name it
        pairs = entries[var] or [(OBJECTIVE_ROW, 0.0)]
        for i in range(0, len(pairs), 2):
            chunk = pairs[i:i + 2]
            fields = [col[var]]
            for row, coef in chunk:
                fields += [row, format_mps_number(coef)]
            yield _line("", *fields)

    if model.binaries:
        lines.append(_line("", "MARKER", "'MARKER'", "", "'INTORG'"))
        for var in model.binaries:
            lines.extend(column_lines(var))
        lines.append(_line("", "MARKER", "'MARKER'", "", "'INTEND'"))
    for var, _, _ in model.continuous:
        if var not in binaries:
            lines.extend(column_lines(var))

    lines.append("RHS")
    rhs = []
    if model.objective.constant != 0.0:
        # the constant enters as -rhs of the objective row
        rhs.append((OBJECTIVE_ROW, -model.objective.constant))
    for row, con in zip(row_names, model.constraints):
        value = con.rhs - con.expr.constant
        if value != 0.0:
            rhs.append((row, value))
    for i in range(0, len(rhs), 2):
        fields = ["RHS"]
        for row, value in rhs[i:i + 2]:
            fields += [row, format_mps_number(value)]
        lines.append(_line("", *fields))

    lines.append("BOUNDS")
    for var in model.binaries:
        lines.append(_line("BV", "BND", col[var]))
    for var, lo, hi in model.continuous:
        if lo != 0.0:
            lines.append(_line("LO", "BND", col[var], format_mps_number(lo)))
        lines.append(_line("UP", "BND", col[var], format_mps_number(hi)))
    lines.append("ENDATA")
    return lines


# ----------------------------------------
# NATIVE JSON
# ----------------------------------------


def _expr_to_json(expr: LinearExpr) -> Dict:
    return {"constant": expr.constant, "terms": [[v, c] for v, c in expr.terms.items()]}


def _expr_from_json(data: Dict) -> LinearExpr:
    return LinearExpr({v: c for v, c in data["terms"]}, data["constant"])


def model_to_json(model: MilpModel) -> Dict:
    return {
        "format": NATIVE_FORMAT,
        "version": NATIVE_VERSION,
        "name": model.name,
        "binaries": list(model.binaries),
        "continuous": [[v, lo, hi] for v, lo, hi in model.continuous],
        "objective": _expr_to_json(model.objective),
        "constraints": [
            {"name": con.name, "expr": _expr_to_json(con.expr), "rhs": con.rhs}
            for con in model.constraints
        ],
        "metadata": model.metadata,
    }


def load_native_json(data: Union[bytes, str]) -> MilpModel:
    """
    Rebuild a MilpModel from its native-json export.

    Raises:
        ValueError: not a native-json model export
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = json.loads(data)
    if doc.get("format") != NATIVE_FORMAT:
        raise ValueError("not a polybound native-json model")
    if doc.get("version") != NATIVE_VERSION:
        raise ValueError(f"unsupported native-json version {doc.get('version')}")
    return MilpModel(
        name=doc["name"],
        binaries=doc["binaries"],
        continuous=[tuple(item) for item in doc["continuous"]],
        constraints=[
            LinearConstraint(_expr_from_json(c["expr"]), c["rhs"], c["name"])
            for c in doc["constraints"]
        ],
        objective=_expr_from_json(doc["objective"]),
        metadata=doc["metadata"],
    )


def export_milp(model: MilpModel, fmt: str = MPS_FIXED) -> bytes:
    """
    Serialize a model.

    Args:
        model: The model to export
        fmt: ``mps-fixed`` or ``native-json``

    Returns:
        UTF-8 encoded file contents
    """
    if fmt == MPS_FIXED:
        text = "\n".join(_mps_lines(model)) + "\n"
    elif fmt == NATIVE_JSON:
        text = json.dumps(model_to_json(model), indent=1) + "\n"
    else:
        raise ValueError(f"unknown export format '{fmt}', expected one of {EXPORT_FORMATS}")
    return text.encode("utf-8")
