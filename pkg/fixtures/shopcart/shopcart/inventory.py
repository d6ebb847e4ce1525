class OutOfStock(Exception):
    def __init__(self, sku):
        super().__init__("out of stock: " + sku)
        self.sku = sku


class Inventory:
    def __init__(self):
        self.stock = {}

    def restock(self, sku, qty=1):
        if qty is None:
            qty = 10
        self.stock[sku] = self.stock.get(sku, 0) + qty

    def reserve(self, sku, qty):
        have = self.stock.get(sku, 0)
        if have < qty:
            raise OutOfStock(sku)
        self.stock[sku] = have - qty
        return have - qty
