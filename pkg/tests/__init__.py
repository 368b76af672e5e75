"""Tests for retri_schedules"""
