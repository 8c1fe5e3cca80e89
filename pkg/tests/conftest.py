import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_criteria = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" not in props or (report.when != "call" and not report.failed):
        return
    key = props["criterion"]
    passed = report.passed
    prev = _criteria.get(key)
    ok = passed and (prev is None or prev[0])
    parts = [prev[2]] if prev and prev[2] else []
    if props.get("detail"):
        parts.append(props["detail"])
    detail = "; ".join(parts)
    _criteria[key] = (ok, props.get("title", ""), detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria):
        ok, title, detail = _criteria[key]
        line = f"{'PASS' if ok else 'FAIL'}  criterion {key:>2}: {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
