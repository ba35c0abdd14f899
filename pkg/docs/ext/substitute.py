"""
Hard replace as soon as the source file is read, so no respect for any markup at all.
Replaces ||DSUBGRAD_VERSION|| with the dsubgrad_version_string from conf.py
"""


def dosubs(app, docname, source):
    if app.config.dsubgrad_version_string != "":
        src = source[0]
        source[0] = src.replace("||DSUBGRAD_VERSION||", app.config.dsubgrad_version_string)


def setup(app):
    app.connect("source-read", dosubs)
    app.add_config_value("dsubgrad_version_string", "", "env")
