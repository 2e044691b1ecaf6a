from .setup import main

main()
