from .cart import Cart
from .inventory import Inventory
from .models import LineItem, Product
from .orders import OrderManager
