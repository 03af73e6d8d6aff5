# Samocode tests
