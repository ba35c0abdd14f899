from nox import session


@session(reuse_venv=True)
def docs(session):
    session.install("-e.")
    session.install("-rdocs/requirements.txt")
    session.run("sphinx-build", "docs", "_build/html")


@session(reuse_venv=True)
def tests(session):
    session.install("-e.[dev]")
    session.run("pytest", *session.posargs)


@session(reuse_venv=True)
def acceptance(session):
    session.install("-e.[dev]")
    session.run("pytest", "-m", "slow", *session.posargs)
