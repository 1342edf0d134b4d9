# Tests for polybound
