"""Hierarchical code-map generation with LLM-backed iterative refinement.

The package is organized around the comprehension flow it supports:
scan a codebase (:mod:`codeatlas.ingest`), ask an LLM for global maps and
an overview (:mod:`codeatlas.prompts`, :mod:`codeatlas.gateway`), validate
the DOT/JSON output into typed graphs (:mod:`codeatlas.model`,
:mod:`codeatlas.dotio`, :mod:`codeatlas.overview`), refine until file
coverage stabilizes (:mod:`codeatlas.refine`), and serve the result over
HTTP (:mod:`codeatlas.service`).
"""

__version__ = "0.1.0"
