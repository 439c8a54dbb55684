"""Explanation scores for database query answers and classifier outputs.

Modules:

* games    - exact / Monte Carlo Shapley and Banzhaf for oracle games
* reldb    - relational instances, conjunctive queries, lineage
* dbscores - responsibility, causal effect, tuple Shapley / Banzhaf
* classify - entities, classifiers, constraints, distributions
* mlscores - SHAP, COUNTER and RESP feature scores
* cli      - the `xscore` command-line interface
"""

__version__ = "0.1.0"
