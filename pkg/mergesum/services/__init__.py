# Summary kinds, combinators, verification, ingestion and engine
