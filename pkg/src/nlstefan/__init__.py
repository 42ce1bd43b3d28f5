"""Nonlocal Stefan problem solvers and kernel tools."""
