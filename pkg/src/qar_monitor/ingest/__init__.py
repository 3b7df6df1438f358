from .table import ColumnSchema, FlightTable, load_schema
from .reader import fill_blanks, load_flight, merge_subsamples, parse_flight_csv, parse_token, write_flight_csv

__all__ = [
    "ColumnSchema",
    "FlightTable",
    "load_schema",
    "fill_blanks",
    "load_flight",
    "merge_subsamples",
    "parse_flight_csv",
    "parse_token",
    "write_flight_csv",
]
