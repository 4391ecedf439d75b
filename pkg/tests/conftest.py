import helpers


def pytest_terminal_summary(terminalreporter):
    if not helpers.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok, secs, note in sorted(helpers.ACCEPTANCE):
        line = f"[{'PASS' if ok else 'FAIL'}] {n}. {title} ({secs:.1f}s)"
        if note:
            line += f" -- {note}"
        terminalreporter.write_line(line)
