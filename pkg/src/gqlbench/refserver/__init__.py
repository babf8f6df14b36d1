"""Reference GraphQL server over an in-memory dataset."""

from .datasource import DataSource, DataSourceConfig
from .executor import ExecutionMode, ExecutionStats, Executor
from .http import QueryService, RefServer, load_dataset

__all__ = ["DataSource", "DataSourceConfig", "ExecutionMode", "ExecutionStats", "Executor",
           "QueryService", "RefServer", "load_dataset"]
