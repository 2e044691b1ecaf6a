# Configuration file for the Sphinx documentation builder.
#
# Only the options that differ from the sphinx-quickstart defaults are set.

import sys

sys.path.insert(0, "..")

import nsf  # noqa: E402

# -- Project information -----------------------------------------------------

project = "nsf"
copyright = "2026, the nsf developers"
author = "the nsf developers"

version = "0.1"
release = "0.1.0"

# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.doctest",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"
language = "en"
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "sphinx"

# -- Options for HTML output -------------------------------------------------

html_theme = "sphinx_rtd_theme"
htmlhelp_basename = project + "doc"

# -- Options for manual page output ------------------------------------------

man_pages = [(master_doc, project, project + " Documentation", [author], 1)]

# -- Extension configuration -------------------------------------------------

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "scipy": ("https://docs.scipy.org/doc/scipy", None),
}

autodoc_member_order = "bysource"
autoclass_content = "both"
autodoc_typehints = "description"


def process_missing_reference(app, env, node, contnode):
    # plug-in classes are documented under their package, resolve short names there
    if node["reftype"] == "class":
        for mod in (nsf, nsf.fields, nsf.shapes, nsf.laws):
            if hasattr(mod, node["reftarget"]):
                domain = env.domains[node["refdomain"]]
                refdoc = node.get("refdoc", env.docname)
                target = "%s.%s" % (mod.__name__, node["reftarget"])
                return domain.resolve_xref(env, refdoc, app.builder, node["reftype"], target, node, contnode)


def setup(app):
    app.connect("missing-reference", process_missing_reference)
