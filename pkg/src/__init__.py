"""Hamilton-Jacobi numerical lab package"""
