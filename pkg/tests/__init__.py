"""Tests for SafeFilterBench"""
