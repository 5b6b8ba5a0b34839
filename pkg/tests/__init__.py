# Tests package