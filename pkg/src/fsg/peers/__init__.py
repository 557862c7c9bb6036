"""Reference external generator peers speaking the framed wire protocol."""
