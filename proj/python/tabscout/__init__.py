# Copyright 2026 The tabscout Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Table discovery conditioned on a query table and a natural-language condition."""

import json as _json

from ._tabscout import (
    TabscoutError,
    embed_table,
    embed_text,
    hungarian,
    join_score,
    ndcg_at_k,
    union_score,
    write_synthetic_corpus,
)
from . import _tabscout

__all__ = [
    "Engine",
    "TabscoutError",
    "embed_table",
    "embed_text",
    "hungarian",
    "join_score",
    "ndcg_at_k",
    "route_intent",
    "search_response_schema",
    "union_score",
    "write_synthetic_corpus",
]


def route_intent(text):
    """Rule-based intent routing; returns the assistant turn as a dict."""
    return _json.loads(_tabscout.route_intent_json(text))


def search_response_schema():
    return _json.loads(_tabscout.search_response_schema_json())


class Engine:
    """A pool directory loaded into memory, searchable once indexed."""

    def __init__(self, pool_dir, dim=256, seed=0, model_path=None):
        self._engine = _tabscout._Engine(str(pool_dir), dim, seed, None if model_path is None else str(model_path))

    def index(self):
        """Embeds the pool and builds its index; returns the build time in seconds."""
        return self._engine.index()

    def search(self, mode, condition=None, table_csv=None, key_column=None, k=10, lam=None, n_candidates=None):
        body = {"mode": mode, "k": k}
        if condition is not None:
            body["condition"] = condition
        if table_csv is not None:
            body["query_table"] = table_csv
        if key_column is not None:
            body["key_column"] = key_column
        if lam is not None:
            body["lambda"] = lam
        if n_candidates is not None:
            body["n_candidates"] = n_candidates
        return _json.loads(self._engine.search(_json.dumps(body)))
