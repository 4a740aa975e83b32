"""Test suite for Chern Marker Lab"""
