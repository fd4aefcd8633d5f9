"""
RACTC origin-destination demand forecasting package
"""
